# Constants package
