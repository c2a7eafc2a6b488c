# Array ensembles, spectra and scenario runs
