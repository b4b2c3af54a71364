def item_url(base, item):
    return base + "/items/" + str(item)
