# Shared utilities package for effham
# Logging, constants, the error hierarchy and artifact storage used by every backend
