# Random field package
