"""File formats, dataset generators and the command line."""
