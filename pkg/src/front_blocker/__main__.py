from front_blocker.cli import main

main()
