# init/init_db.py
import os
import sys

import click
from dotenv import load_dotenv

# 项目根目录 (当前文件的上一级)，加入搜索路径后才能 import common
current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.dirname(current_dir)
sys.path.append(project_root)

env_path = os.path.join(project_root, '.env')
if os.path.exists(env_path):
    load_dotenv(env_path)
    print(f"✅ 成功加载环境变量: {env_path}")
else:
    print(f"⚠️  未找到 {env_path}，使用默认账本 (sqlite)")

# 环境变量就绪后再导入，LEDGER_URL 才会生效
from common.database import Base, engine
from common import models  # noqa: F401  注册表结构


def init_models(reset: bool = False):
    print(f"🔌 正在连接账本库: {engine.url.render_as_string(hide_password=True)}")
    if reset:
        # ⚠️ 会清空所有批次与扫描点
        print("🗑️  正在删除旧表 (Drop All)...")
        Base.metadata.drop_all(bind=engine)

    print("🛠️  正在创建表 (Create All)...")
    Base.metadata.create_all(bind=engine)
    print(f"✅ 账本表结构同步完成: {sorted(Base.metadata.tables)}")


@click.command()
@click.option("--reset", is_flag=True, help="先删除所有旧表")
def main(reset):
    """初始化扫描账本库"""
    init_models(reset)


if __name__ == "__main__":
    main()
