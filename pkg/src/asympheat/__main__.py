from asympheat.cli import main

main()
