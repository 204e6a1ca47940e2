"""Analysis module: CHSH estimation, certificates, the no-signalling polytope and the test battery."""
