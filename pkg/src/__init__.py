"""BellRand - device-independent randomness certification from CHSH trial logs"""
