from setuptools import find_packages, setup

setup(
    name="hqip",
    version="0.1.0",
    description="Hybrid optical quantum-information simulator: Fock and Gaussian backends, "
                "teleportation, cluster programs and off-line gates",
    packages=find_packages(include=["src", "src.*"]),
    install_requires=["numpy==1.26.1", "scipy==1.11.3"],
    extras_require={"test": ["pytest==7.4.2"]},
    entry_points={"console_scripts": ["hqip=src.cli:main"]},
)
