while not done:
    n = n * 2
