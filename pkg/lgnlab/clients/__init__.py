"""lgnlab file format clients package."""
