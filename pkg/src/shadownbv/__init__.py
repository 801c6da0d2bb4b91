"""Next-best-view exploration with shadowcasting gain over RRT edges."""
