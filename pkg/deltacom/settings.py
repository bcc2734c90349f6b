TOOL_NAME = "deltacom"
TOOL_VERSION = "0.1.0"
SCHEMA_VERSION = 1

LOG_FORMAT = "%(asctime)s [%(name)s] %(levelname)s: %(message)s"
LOG_DATEFORMAT = "%Y-%m-%d %H:%M:%S"

# preprocess
DEFAULT_CORE_K = 2
MAX_CLEANING_ITERATIONS = 100

# degree statistics
DEFAULT_POWER_LAW_K_MIN = 1
MIN_POWER_LAW_SAMPLES = 10
CLUSTERING_HISTOGRAM_BINS = 10

# baselines
DEFAULT_MAX_SWEEPS = 100

# matching
SMALL_GROUP_SIZE = 5
DEFAULT_SAMPLE_FRACTION = 0.15
MIN_REGRESSION_POINTS = 3

# synthetic graphs
SYNTH_MAX_RETRIES = 100

# joins at this dendrogram resolution leave classical modularity unchanged
MODULARITY_PEAK_RESOLUTION = 2

# frontier heap is rebuilt when stale entries outnumber live ones by this factor
FRONTIER_COMPACTION_FACTOR = 4

MATCH_RESULTS_HEADER = [
    "group",
    "size",
    "community",
    "score",
    "t",
    "method",
    "small",
]
CDF_HEADER = ["score", "cumulative_fraction"]
DEGREE_HISTOGRAM_HEADER = ["degree", "count"]
CLUSTERING_HISTOGRAM_HEADER = ["bin_low", "bin_high", "count"]
CLUSTERING_BY_DEGREE_HEADER = ["degree", "avg_clustering"]
KNN_BY_DEGREE_HEADER = ["degree", "avg_neighbor_degree"]
TAXONOMY_HEADER = ["taxonomy", "count"]
PROFILE_HEADER = ["t", "t_decimal", "communities", "modularity", "modularity_t"]
DIAGNOSTICS_HEADER = ["node", "group", "k", "k_in", "strong", "hu"]
