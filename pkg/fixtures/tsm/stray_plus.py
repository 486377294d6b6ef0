# expect-position: 2
# expect-terminal: '+'
x = + 1
