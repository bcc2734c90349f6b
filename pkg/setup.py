from setuptools import setup, find_packages

setup(
    name="deltacom",
    version="0.1.0",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "click~=8.1.3",
        "numpy~=1.24.3",
        "schema~=0.7.5",
        "typeguard~=4.0.1",
    ],
    entry_points={
        "console_scripts": ["deltacom=deltacom.__main__:main_command"],
    },
    python_requires=">=3.8",
    description="multiresolution modularity community detection with ground-truth evaluation",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[],
)
