# Task handlers run by the engine
