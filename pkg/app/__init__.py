# Subsonic axisymmetric flow past obstacles - stream-function solver
