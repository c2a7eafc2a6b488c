# Artifact persistence
