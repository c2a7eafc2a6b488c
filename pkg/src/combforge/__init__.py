# Josephson radiation comb simulator
__version__ = "0.1.0"
