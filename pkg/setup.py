from setuptools import setup, find_packages

setup(
    name="coarse-clt",
    version="0.1.0",
    description="Geodesic automata, Parry measures and central limit experiments for group actions",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    author="coarse-clt developers",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "click>=8.0.0",
        "rich>=13.0.0",
        "pydantic>=2.0.0",
        "pydantic-settings>=2.0.0",
        "python-dotenv>=1.0.0",
        "pyyaml>=6.0",
        "orjson>=3.9.0",
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "networkx>=3.0",
    ],
    extras_require={
        "test": ["pytest>=7.4.0"],
    },
    entry_points={
        "console_scripts": [
            "coarse-clt=coarse_clt.cli:main",
        ],
    },
    python_requires=">=3.9",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
