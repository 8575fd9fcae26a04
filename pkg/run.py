"""项目启动脚本"""

from __future__ import annotations

import sys
from pathlib import Path


def main() -> int:
    project_root = Path(__file__).parent
    sys.path.insert(0, str(project_root / "src"))
    from DrewLab.main import main as app_main

    return app_main()


if __name__ == "__main__":
    raise SystemExit(main())
