# Physical types and the single-SQUID solver
