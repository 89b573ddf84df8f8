# Objective, estimators, adaptive control and the optimization workflows
