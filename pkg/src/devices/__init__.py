"""Device models: honest quantum, local hidden-variable and PR-box devices, plus the simulator."""
