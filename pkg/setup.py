from setuptools import find_packages, setup

with open("requirements.txt") as f:
    requirements = [line.strip() for line in f if line.strip() and not line.startswith("#")]

setup(
    name="magbend",
    version="0.1.0",
    description="Field, bending and surrogate models for graded-stiffness magnetic soft continuum robots",
    packages=find_packages(exclude=["tests"]),
    package_data={"magbend": ["data/specs/*.json"]},
    python_requires=">=3.10",
    install_requires=[r for r in requirements if not r.startswith("pytest")],
    extras_require={"test": ["pytest==8.3.5"]},
    entry_points={"console_scripts": ["magbend=magbend.cli:main"]},
)
