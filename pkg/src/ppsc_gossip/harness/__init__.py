"""Configuration, data loading, experiment drivers and the command line."""
