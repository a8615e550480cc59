import os

# Tests reference demo/ files by repo-relative path.
os.chdir(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
