import json
import logging
import os


def get_filename(file_path, with_extension=True):
    """
    A Utility function to get the filename with/without extension given a path
    :param file_path: A file path
    :param with_extension: Include extension into filename
    :return: Filename with or without extension
    """

    if with_extension:
        return os.path.basename(file_path)

    return os.path.splitext(os.path.basename(file_path))[0]


def sibling_path(file_path, suffix, extension):
    """
    Build a path next to file_path sharing its stem, i.e: report.csv -> report_summary.csv

    :param file_path: Reference file path
    :param suffix: Suffix appended to the stem
    :param extension: Extension of the new file, including the dot
    :return: The sibling path
    """
    folder = os.path.dirname(file_path)
    return os.path.join(folder, get_filename(file_path, with_extension=False) + suffix + extension)


def folder_exist_or_create(folder_path):
    """
    Create a folder (and its parents) when it does not exist yet

    :param folder_path: Folder path, empty string means current directory
    """
    if not folder_path:
        return
    if not os.path.isdir(folder_path):
        os.makedirs(folder_path)
        logging.info(f"Directory has been created: {folder_path}")
    else:
        logging.debug(f"Directory already exist: {folder_path}")


def file_exist(file_path):
    return os.path.isfile(file_path)


def write_json(payload, output_path):
    """
    Dump a json serializable payload, creating the parent folder if needed

    :param payload: dict or list
    :param output_path: Destination file
    """
    folder_exist_or_create(os.path.dirname(output_path))
    with open(output_path, "w", encoding="utf-8") as out:
        json.dump(payload, out, indent=2, sort_keys=True)
    logging.info(f"Json written : {output_path}")


def read_json(input_path):
    with open(input_path, "r", encoding="utf-8") as infile:
        return json.load(infile)
