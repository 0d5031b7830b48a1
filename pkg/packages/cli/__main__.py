from packages.cli.main import run

run()
