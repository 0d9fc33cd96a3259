from spinreset.cli import main

main()
