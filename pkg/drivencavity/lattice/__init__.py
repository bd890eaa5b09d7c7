# Lattice operator algebra
