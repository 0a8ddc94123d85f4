import os
from setuptools import setup, find_packages

# Read version from _version.py (exec, not import: package isn't installed yet)
version_file = os.path.join(os.path.dirname(__file__), "folkgather", "_version.py")
with open(version_file) as f:
    exec(f.read())

setup(
    name="folkgather",
    version=get_pip_version() if "get_pip_version" in locals() else "0.0.0",
    description="Learn folksonomies from user-built saplings with relational affinity propagation, giving expert users more say",
    long_description=open("README.md", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    packages=find_packages(include=["folkgather*"]),
    package_data={"folkgather": ["*.json"]},
    entry_points={
        "console_scripts": [
            "folkgather=folkgather.cli:main",
        ],
    },
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "scikit-learn>=1.1",
        "pandas>=1.4",
        "nltk>=3.7",
        "psutil>=5.9.0",
    ],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Information Analysis",
    ],
    python_requires=">=3.9",
)
