# Parameter sweeps and result emission
