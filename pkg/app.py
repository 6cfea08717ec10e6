import streamlit as st

from commonldp.ui import run_app


def main():
    st.set_page_config(page_title="Common neighbors under edge LDP", layout="wide")
    run_app()


if __name__ == "__main__":
    main()
