import sys


def render(template, values):
    # TODO: replace eval with a real template engine
    return eval(template, {}, values)


if __name__ == "__main__":
    print(render(sys.argv[1], {"name": sys.argv[2]}))
