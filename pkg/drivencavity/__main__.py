from drivencavity.main import main

raise SystemExit(main())
