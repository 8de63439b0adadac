from coposhier.cli import main

raise SystemExit(main())
