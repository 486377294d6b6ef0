# expect-position: 4
# expect-terminal: 'pass'
if x:
pass
