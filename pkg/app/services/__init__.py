# Simulation services: behavior trees, knowledge exchange, world, metrics and studies
