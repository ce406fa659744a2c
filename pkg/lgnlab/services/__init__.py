"""lgnlab subcommand services package."""
