# Panel data module - containers, seeded streams and the simulation design
