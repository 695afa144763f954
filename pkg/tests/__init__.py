# Test package for effham
