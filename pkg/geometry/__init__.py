# Geometry package: meshes and level sets
