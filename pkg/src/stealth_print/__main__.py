from stealth_print.cli import main

raise SystemExit(main())
