# Observables and phase-diagram checks
