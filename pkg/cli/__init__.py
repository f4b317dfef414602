# CLI module - subcommands and file formats
