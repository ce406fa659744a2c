"""lgnlab numerical core package."""
