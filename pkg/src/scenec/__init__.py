"""Scene compiler: declarative object requests to simulation-ready assets."""
