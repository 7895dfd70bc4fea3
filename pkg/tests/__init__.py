# Tests for sbmca
