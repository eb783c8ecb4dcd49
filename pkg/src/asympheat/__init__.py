"""Heat flow, resolvents and semilinear equilibria on functions with polyhomogeneous far fields."""
