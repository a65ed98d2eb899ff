import sys

from dlimit.app import main


def run() -> int:
    try:
        return main()
    except Exception as err:
        print(f"Unexpected {type(err).__name__}", file=sys.stderr)
        if hasattr(err, "reason"):
            print(f"reason was: {getattr(err, 'reason')}", file=sys.stderr)
        raise


if __name__ == "__main__":
    sys.exit(run())
