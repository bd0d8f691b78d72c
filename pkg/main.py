# Command-line entry point - the package lives in rockafellian/
import sys

from rockafellian.cli import dispatch

if __name__ == "__main__":
    sys.exit(dispatch(sys.argv[1:]))
