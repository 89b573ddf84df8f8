# Finite element package
