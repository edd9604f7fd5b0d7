from robust_mpc.cli import main; import sys; sys.exit(main())
