# Tests package for the robust shape optimizer
