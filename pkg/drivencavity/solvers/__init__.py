# Steady-state solvers
