"""Monte Carlo experiments and the command-line front end."""
