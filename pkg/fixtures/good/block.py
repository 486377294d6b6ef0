if x < 2:
    pass
    y = y + 1
