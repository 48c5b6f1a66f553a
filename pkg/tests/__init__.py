# Tests for the subsonic stream-function solver
