"""Even and non-even branches of the one-dimensional Liouville-type problem."""
