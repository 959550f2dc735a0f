"""Import root for the fcreg package."""
