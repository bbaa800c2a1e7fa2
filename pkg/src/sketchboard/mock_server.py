"""Run the mock provider over stdio: ``python -m sketchboard.mock_server``."""

from .mocks import MockProviderServer


def main() -> None:
    MockProviderServer().serve_stdio()


if __name__ == "__main__":
    main()
