"""Define the entrypoints of the program."""
