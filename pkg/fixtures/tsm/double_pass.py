# expect-position: 1
# expect-terminal: 'pass'
pass pass
