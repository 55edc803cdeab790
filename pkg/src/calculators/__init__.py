"""Protocol calculators built on the Fock and Gaussian representations."""
