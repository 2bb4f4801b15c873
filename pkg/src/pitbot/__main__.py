from pitbot.cli import main

raise SystemExit(main())
