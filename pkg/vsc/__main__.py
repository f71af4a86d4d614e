from vsc.main import main

main()
