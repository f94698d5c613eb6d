# Tests for space_switch
