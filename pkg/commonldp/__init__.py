__version__ = "0.2.0"
__all__ = [
    "models",
    "errors",
    "graph_loader",
    "generator",
    "logic",
    "mechanisms",
    "optimizer",
    "protocol",
    "estimators",
    "bench",
    "cli",
    "ui",
]
