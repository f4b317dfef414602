# Experiments module - preset scenarios, the Monte Carlo runner and its reports
